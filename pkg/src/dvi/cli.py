"""Command-line entry point.

Reports go to stdout as JSON; human-readable summaries go to stderr.
Exit codes: 0 success, 2 input error, 3 adapter error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .corpus import ManifestError, load_manifest, save_manifest
from .evalharness import (
    EvalReport,
    correctness,
    head_to_head,
    method_report,
    run_dvi_queries,
    run_pi_queries,
)
from .hdnc import NoDominantScheme, run_hdnc
from .indexer import FUSION_MODES, MODES, FusionPolicy, IndexBuildError, IndexBundle, build_index
from .pipeline import (
    BlindDescriber,
    CommandVlm,
    HashEmbedder,
    HomogenizedDescriber,
    HttpVlm,
    IdentityRenderer,
    ManifestRenderer,
    PiBuildError,
    VlmError,
    answer_query,
    build_pi_index,
    make_vlm,
)
from .retrieval import Bm25Params, build_postings, search
from .synth import CatalogSpec, SynthSpec, SynthSpecError, generate_synthetic_catalog, generate_synthetic_corpus

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ADAPTER = 3


class InputError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_manifest(path):
    if not path:
        raise InputError("--manifest is required")
    try:
        return load_manifest(path)
    except OSError as exc:
        raise InputError(f"cannot read manifest: {exc}") from None
    except ManifestError as exc:
        raise InputError(f"bad manifest: {exc}") from None


def _load_index(path):
    if not path:
        raise InputError("--index is required")
    try:
        return IndexBundle.load(path)
    except OSError as exc:
        raise InputError(f"cannot read index: {exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad index bundle: {exc}") from None


def _params(args) -> Bm25Params:
    try:
        return Bm25Params(top_k=args.k)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _policy(args) -> FusionPolicy:
    try:
        return FusionPolicy(args.fusion, args.ocr_threshold)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _make_vlm(args, manifest):
    try:
        return make_vlm(args.vlm, manifest, args.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write_or_emit(obj, out) -> None:
    if out:
        Path(out).write_text(json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    else:
        _emit(obj)


# -- subcommands ----------------------------------------------------------------


def _spec_from_json(d: dict):
    if not isinstance(d, dict):
        raise InputError("spec must be a JSON object")
    d = dict(d)
    kind = d.pop("kind", "drawings")
    if kind == "drawings":
        return SynthSpec.from_dict(d)
    if kind == "catalog":
        known = {f.name for f in fields(CatalogSpec)}
        unknown = set(d) - known
        if unknown:
            raise SynthSpecError(f"unknown spec fields: {sorted(unknown)}")
        kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return CatalogSpec(**kw)
    raise InputError(f"unknown corpus kind {kind!r} (drawings or catalog)")


def cmd_corpus_synth(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8")) if args.spec else {}
    except OSError as exc:
        raise InputError(f"cannot read spec: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"spec is not valid JSON: {exc}") from None
    try:
        spec = _spec_from_json(raw)
    except (SynthSpecError, TypeError) as exc:
        raise InputError(f"invalid spec: {exc}") from None
    if isinstance(spec, CatalogSpec):
        manifest = generate_synthetic_catalog(spec, args.seed)
    else:
        manifest = generate_synthetic_corpus(spec, args.seed)
    if not args.out:
        raise InputError("--out is required")
    save_manifest(manifest, args.out)
    _note(f"wrote {args.out}: {len(manifest.pages)} pages, {manifest.drawing_count} drawings, "
          f"{len(manifest.queries)} queries")
    return EXIT_OK


def _hierarchy_report(hierarchy, report) -> dict:
    return {
        "widths": list(hierarchy.strategy.widths),
        "common_prefix": hierarchy.scheme.common_prefix,
        "suffix_len": hierarchy.scheme.suffix_len,
        "coverage": hierarchy.scheme.coverage,
        "level_counts": {str(k): v for k, v in hierarchy.nodes_by_level().items()},
        "nonconforming": len(hierarchy.nonconforming),
        "jaccard": report.summary(),
    }


def _run_hdnc(manifest, seed):
    try:
        return run_hdnc(manifest.drawings, rng_seed=seed)
    except (NoDominantScheme, ValueError) as exc:
        raise InputError(f"hdnc failed: {exc}") from None


def cmd_index(args) -> int:
    manifest = _load_manifest(args.manifest)
    policy = _policy(args)
    hierarchy = report = None
    if args.mode == "hdnc":
        hierarchy, report = _run_hdnc(manifest, args.seed)
    try:
        bundle = build_index(manifest, hierarchy, policy, args.mode,
                             include_labels=not args.no_labels, exclude_toc_page=args.exclude_toc_page)
    except IndexBuildError as exc:
        raise InputError(str(exc)) from None
    if not args.out:
        raise InputError("--out is required")
    bundle.save(args.out)
    out = {"index": args.out, "build_stats": bundle.build_stats}
    if hierarchy is not None:
        out["hierarchy"] = _hierarchy_report(hierarchy, report)
    _emit(out)
    _note(f"indexed {bundle.build_stats['page_count']} pages ({args.mode}, fusion {policy.mode}), "
          f"{bundle.build_stats['fused_page_count']} with page text")
    return EXIT_OK


def cmd_search(args) -> int:
    bundle = _load_index(args.index)
    hits = search(args.query, build_postings(bundle), _params(args))
    for h in hits:
        _emit({"rank": h.rank, "page_id": h.page_id, "score": round(h.score, 6)})
    _note(f"{len(hits)} hit(s)")
    return EXIT_OK


def cmd_ask(args) -> int:
    bundle = _load_index(args.index)
    manifest = _load_manifest(args.manifest) if args.manifest else None
    try:
        vlm = _make_vlm(args, manifest)
    except VlmError as exc:
        _note(f"adapter error: {exc}")
        return EXIT_ADAPTER
    renderer = ManifestRenderer(manifest) if manifest else IdentityRenderer()
    res = answer_query(args.question, bundle, build_postings(bundle), _params(args), renderer, vlm)
    pages = [{"rank": h.rank, "page_id": h.page_id, "score": round(h.score, 6)} for h in res.retrieved]
    out = {"question": args.question, "pages": pages, "answer": res.answer,
           "vlm_called": res.vlm_called, "error": res.error}
    if not res.retrieved:
        out["message"] = "no pages located"
    _emit(out)
    if not res.retrieved:
        _note("no pages located")
        return EXIT_OK
    if res.error:
        _note(f"adapter error: {res.error}")
        return EXIT_ADAPTER
    _note(res.answer)
    return EXIT_OK


def _describer(args, manifest):
    kind = args.describer
    if kind == "blind":
        return BlindDescriber(manifest)
    if kind == "homogenized":
        return HomogenizedDescriber(manifest)
    if kind == "cmd" or kind.startswith("cmd:"):
        return CommandVlm(kind[4:] or None)
    if kind == "http" or kind.startswith("http:"):
        return HttpVlm(kind[5:] or None)
    raise InputError(f"unknown describer {kind!r}")


def cmd_eval(args) -> int:
    manifest = _load_manifest(args.manifest)
    if not manifest.queries:
        raise InputError("manifest has no queries")
    params = _params(args)
    if args.max_inflight < 1:
        raise InputError("--max-inflight must be >= 1")
    try:
        vlm = _make_vlm(args, manifest)
    except VlmError as exc:
        _note(f"adapter error: {exc}")
        return EXIT_ADAPTER
    renderer = ManifestRenderer(manifest)
    methods, outcomes = [], {}
    adapter_errors = 0

    if args.method in ("dvi", "both"):
        if args.index:
            bundle = _load_index(args.index)
        else:
            hierarchy = None
            if args.mode == "hdnc":
                hierarchy, _ = _run_hdnc(manifest, args.seed)
            try:
                bundle = build_index(manifest, hierarchy, _policy(args), args.mode,
                                     exclude_toc_page=args.exclude_toc_page)
            except IndexBuildError as exc:
                raise InputError(str(exc)) from None
        results = run_dvi_queries(manifest, bundle, params, renderer, vlm, args.max_inflight)
        adapter_errors += sum(r.error is not None for r in results)
        methods.append(method_report("dvi", results, manifest, params.top_k, 0))
        outcomes["dvi"] = correctness({r.query_id: r.answer for r in results}, manifest)

    if args.method in ("pi", "both"):
        try:
            describer = _describer(args, manifest)
            embedder = HashEmbedder(seed=args.seed)
            pi = build_pi_index(manifest, describer, embedder)
        except (VlmError, PiBuildError) as exc:
            _note(f"adapter error: {exc}")
            return EXIT_ADAPTER
        results = run_pi_queries(manifest, pi, embedder, params.top_k, renderer, vlm, args.max_inflight)
        adapter_errors += sum(r.error is not None for r in results)
        methods.append(method_report("pi", results, manifest, params.top_k, pi.describer_calls))
        outcomes["pi"] = correctness({r.query_id: r.answer for r in results}, manifest)

    report = EvalReport(manifest.corpus_id, methods)
    if len(outcomes) == 2:
        report.head_to_head = head_to_head(outcomes["dvi"], outcomes["pi"])
        report.labels = ("dvi", "pi")
    _write_or_emit(report.to_dict(), args.out)
    _note(report.summary())
    if adapter_errors:
        _note(f"{adapter_errors} adapter error(s)")
        return EXIT_ADAPTER
    return EXIT_OK


def cmd_hdnc_inspect(args) -> int:
    manifest = _load_manifest(args.manifest)
    hierarchy, report = _run_hdnc(manifest, args.seed)
    out = _hierarchy_report(hierarchy, report)
    if args.full:
        out["hierarchy"] = hierarchy.to_dict()
    _write_or_emit(out, args.out)
    levels = ", ".join(f"L{k}={v}" for k, v in hierarchy.nodes_by_level().items())
    _note(f"widths {list(hierarchy.strategy.widths)}; {levels}; jaccard pass rate {report.pass_rate:.2f}")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvi", description="Structural page locating for drawing sets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, manifest=False, index=False, out=False):
        if manifest:
            sp.add_argument("--manifest", help="corpus manifest (JSONL)")
        if index:
            sp.add_argument("--index", help="index bundle (JSON)")
        if out:
            sp.add_argument("--out", help="output path")
        sp.add_argument("--seed", type=int, default=0)

    def policy(sp):
        sp.add_argument("--mode", choices=MODES, default="hdnc")
        sp.add_argument("--fusion", choices=FUSION_MODES, default="adaptive")
        sp.add_argument("--ocr-threshold", type=float, default=0.85)
        sp.add_argument("--exclude-toc-page", action="store_true")

    s = sub.add_parser("corpus-synth", help="generate a synthetic corpus manifest")
    s.add_argument("--spec", help="generator spec (JSON); defaults apply when omitted")
    common(s, out=True)
    s.set_defaults(func=cmd_corpus_synth)

    s = sub.add_parser("index", help="build an index bundle")
    common(s, manifest=True, out=True)
    policy(s)
    s.add_argument("--no-labels", action="store_true", help="titles only, without hierarchy labels")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("search", help="top-k pages for a query")
    common(s, index=True)
    s.add_argument("--query", required=True)
    s.add_argument("--k", type=int, default=3)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("ask", help="locate pages and ask the VLM")
    common(s, manifest=True, index=True)
    s.add_argument("--question", required=True)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--vlm", default="cmd", help="mock:oracle | mock:lossy:<c> | mock:fixed:<a> | cmd | http")
    s.set_defaults(func=cmd_ask)

    s = sub.add_parser("eval", help="evaluate dvi, pi or both on the manifest's queries")
    common(s, manifest=True, index=True, out=True)
    policy(s)
    s.add_argument("--method", choices=("dvi", "pi", "both"), default="dvi")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--vlm", default="mock:oracle")
    s.add_argument("--describer", default="blind", help="blind | homogenized | cmd | http")
    s.add_argument("--max-inflight", type=int, default=4)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("hdnc", help="drawing-number hierarchy tools")
    hs = s.add_subparsers(dest="hdnc_command", required=True)
    i = hs.add_parser("inspect", help="infer and summarize the hierarchy")
    common(i, manifest=True, out=True)
    i.add_argument("--full", action="store_true", help="include the full tree")
    i.set_defaults(func=cmd_hdnc_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _note(f"error: {exc}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
