"""``mtmt`` command line: prep, encode, supervise, score, mix, synthembed.

Exit status: 0 success, 1 usage error, 2 data/validation error, 3 I/O error.
Every artifact gets a JSON sidecar (``<path>.json``) holding the resolved
run configuration; ``created_at`` is the only non-reproducible field.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import EligibilityError, MtmtError, UndefinedRateError, ValidationError
from .manifest_io import (
    SessionAnnotation,
    atomic_write,
    file_digest,
    load_tensor,
    parse_rttm,
    read_manifest,
    save_tensor,
    session_from_dict,
    sidecar_path,
    write_manifest,
    write_rttm,
)
from .metacat import SCHEMES, canonical_scheme, encode
from .mixgen import MixRecipe, mix_sessions, read_pool, synth_embeddings, synthetic_pool
from .rng import SEED_MAX, derive_seed
from .scoring import METRICS, TSWER_DEFINITION, normalize, score_batch
from .serialization import (
    SerializedTranscript,
    Token,
    extract_ts,
    parse_serialized,
    select_query,
    serialize_dual,
    serialize_ms,
    serialize_ts,
    speaker_streams,
)
from .supervision import (
    DiarizerNoiseConfig,
    MixConfig,
    ato_order,
    build_activity,
    mix_supervision,
    simulate_diarizer,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def _prob(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("probability must be in [0, 1]")
    return value


def _positive(kind):
    def conv(text):
        value = kind(text)
        if not value > 0:
            raise argparse.ArgumentTypeError("must be positive")
        return value

    return conv


def _scheme(text: str) -> str:
    try:
        return canonical_scheme(text)
    except ValidationError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--max-speakers", type=_positive(int), default=4)
    g.add_argument("--frame-rate", "--fps", dest="frame_rate", type=_positive(float), default=12.5)
    g.add_argument("--scheme", type=_scheme, default="meta_cat", metavar="{" + ",".join(SCHEMES) + "}")
    g.add_argument("--rttm-mix-prob", type=_prob, default=0.5)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtmt", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version",
        action="version",
        version=json.dumps({"name": "mtmt", "version": __version__}),
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = [_common()]

    p = sub.add_parser("prep", parents=common, help="write speaker-token transcripts")
    p.add_argument("mode", choices=["ms", "ts", "dual"])
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--query-speaker", help="fixed query speaker label (ts/dual)")
    p.add_argument("--all-queries", action="store_true", help="dual: one line per eligible query speaker")
    p.add_argument("--per-word", action="store_true", help="speaker token before every word")
    p.add_argument("--gap", type=float, default=0.5, help="segment merge gap for derived segments")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("encode", parents=common, help="apply a speaker-encoding scheme")
    p.add_argument("--emb", required=True, help="embedding tensor A (D x T)")
    p.add_argument("--act", required=True, help="activity tensor S (K x T)")
    p.add_argument("--out", required=True)
    p.add_argument("--binarize", nargs="?", type=float, const=0.5, default=None, metavar="THRESHOLD")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("supervise", parents=common, help="build speaker supervision from RTTM")
    p.add_argument("--rttm", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--source", choices=["rttm", "diar", "mix"], default="rttm")
    p.add_argument("--session", help="session id (required if the RTTM holds several)")
    p.add_argument("--manifest", help="take the session duration from this manifest")
    p.add_argument("--duration", type=float, help="session duration in seconds")
    p.add_argument("--miss-prob", type=_prob, default=0.05)
    p.add_argument("--false-alarm-prob", type=_prob, default=0.02)
    p.add_argument("--confusion-prob", type=_prob, default=0.02)
    p.add_argument("--boundary-jitter", type=float, default=0.08)
    p.add_argument("--smoothing-window", type=int, default=3)
    p.set_defaults(func=cmd_supervise)

    p = sub.add_parser("score", parents=common, help="WER / cpWER / TS-WER report")
    p.add_argument("--metric", choices=["wer", "cpwer", "tswer"], required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out", help="report path (default: stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("mix", parents=common, help="generate mixture manifests and RTTM")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pool", help="source-utterance JSONL pool")
    src.add_argument("--synthetic-pool", type=_positive(int), metavar="N_SPEAKERS")
    p.add_argument("--n", type=int, choices=[2, 3], default=2)
    p.add_argument("--count", type=_positive(int), required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("synthembed", parents=common, help="synthetic embedding tensors")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dim", type=_positive(int), required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--session", help="only this session")
    p.set_defaults(func=cmd_synthembed)
    return parser


def run_config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    return cfg


def _meta(args, **extra) -> dict:
    return {
        "command": args.command,
        "config": run_config(args),
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        **extra,
    }


def _write_sidecar(path, meta: dict) -> None:
    atomic_write(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _jsonl(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)


def _warn(msg: str) -> None:
    print(f"mtmt: warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------- prep


def cmd_prep(args) -> int:
    sessions = read_manifest(Path(args.manifest).read_bytes(), gap=args.gap)
    rows, skipped = [], []
    for si, session in enumerate(sessions):
        sid = session.session_id
        if not session.segments:
            order = None
        else:
            order = ato_order(session.segments, args.max_speakers)
        if args.mode == "ms" or (args.mode == "dual" and not args.query_speaker and not args.all_queries):
            if args.mode == "ms":
                tr = serialize_ms(session, order, per_word=args.per_word) if order else SerializedTranscript((), "ms")
                row = {"session_id": sid, "mode": "ms", "query": None}
            else:
                tr = serialize_dual(session, order, None, per_word=args.per_word) if order else SerializedTranscript((Token.beep(),), "dual")
                row = {"session_id": sid, "mode": "dual", "query": None, "beep_time": 0.0}
            tr.validate(args.max_speakers)
            rows.append({**row, "text": tr.render()})
            continue

        labels = order.labels if order is not None else []
        if args.query_speaker:
            candidates = [args.query_speaker]
        else:
            candidates = labels
        for label in candidates:
            if label not in labels:
                skipped.append({"session_id": sid, "speaker": label, "reason": "speaker not in session"})
                continue
            seed = derive_seed(args.seed, si, labels.index(label))
            try:
                query = select_query(session, label, seed)
            except EligibilityError as e:
                skipped.append({"session_id": sid, "speaker": label, "reason": str(e)})
                continue
            if args.mode == "ts":
                tr = serialize_ts(session, order, query)
            else:
                tr = serialize_dual(session, order, query, per_word=args.per_word)
            tr.validate(args.max_speakers)
            rows.append(
                {
                    "session_id": sid,
                    "mode": args.mode,
                    "query": query.to_dict(),
                    "target_speaker": label,
                    "beep_time": query.duration,
                    "text": tr.render(),
                }
            )
    atomic_write(args.out, _jsonl(rows))
    arrangement = "per_word" if args.per_word else "change_point"
    _write_sidecar(
        args.out,
        _meta(args, speaker_token_arrangement=arrangement, lines=len(rows), skipped=skipped),
    )
    if skipped:
        _warn(f"{len(skipped)} query candidate(s) skipped; see {sidecar_path(args.out)}")
    return EXIT_OK


# ---------------------------------------------------------------- encode


def cmd_encode(args) -> int:
    A, _ = load_tensor(args.emb)
    S, s_meta = load_tensor(args.act)
    if A.ndim != 2 or S.ndim != 2:
        raise ValidationError(f"expected 2-D tensors, got {A.shape} and {S.shape}")
    out = encode(args.scheme, A, S, threshold=args.binarize)
    save_tensor(args.out, out.values.astype(np.float32))
    _write_sidecar(
        args.out,
        _meta(
            args,
            scheme=out.scheme,
            threshold=args.binarize,
            dims=list(out.values.shape),
            inputs={"emb": file_digest(args.emb), "act": file_digest(args.act)},
            frame_rate=s_meta.get("frame_rate"),
            speaker_order=s_meta.get("speaker_order"),
        ),
    )
    return EXIT_OK


# ---------------------------------------------------------------- supervise


def _select_session(items, wanted, what):
    ids = list(dict.fromkeys(items))
    if wanted is None:
        if len(ids) != 1:
            raise ValidationError(f"{what} holds {len(ids)} sessions; pass --session")
        return ids[0]
    if wanted not in ids:
        raise ValidationError(f"session {wanted!r} not found in {what}")
    return wanted


def cmd_supervise(args) -> int:
    segments = parse_rttm(Path(args.rttm).read_bytes())
    if not segments:
        raise ValidationError(f"{args.rttm}: no SPEAKER records")
    sid = _select_session([s.session_id for s in segments], args.session, args.rttm)
    segments = [s for s in segments if s.session_id == sid]
    duration = max(s.offset for s in segments)
    if args.manifest:
        match = [x for x in read_manifest(Path(args.manifest).read_bytes()) if x.session_id == sid]
        if not match:
            raise ValidationError(f"session {sid!r} not in {args.manifest}")
        duration = max(duration, match[0].duration)
    if args.duration is not None:
        duration = max(duration, args.duration)
    session = SessionAnnotation(sid, segments, [], duration)
    order = ato_order(segments, args.max_speakers)
    act = build_activity(session, args.frame_rate, order, args.max_speakers)
    extra = {}
    if args.source in ("diar", "mix"):
        noise = DiarizerNoiseConfig(
            args.miss_prob,
            args.false_alarm_prob,
            args.confusion_prob,
            args.boundary_jitter,
            args.smoothing_window,
            derive_seed(args.seed, 0),
        )
        diar = simulate_diarizer(act, noise)
        extra["diarizer_seed"] = noise.seed
        if args.source == "mix":
            mix = MixConfig(args.rttm_mix_prob, derive_seed(args.seed, 1))
            act = mix_supervision(act, diar, mix)
            extra["mix_seed"] = mix.seed
        else:
            act = diar
    save_tensor(args.out, act.values.astype(np.float32))
    _write_sidecar(
        args.out,
        _meta(args, session_id=sid, source=args.source, dims=[act.K, act.T], **act.sidecar(), **extra),
    )
    return EXIT_OK


# ---------------------------------------------------------------- score


def _load_records(path) -> list[dict]:
    rows = []
    text = Path(path).read_bytes().decode("utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path}: line {lineno}: invalid JSON: {e}") from None
        if not isinstance(obj, dict) or "session_id" not in obj:
            raise ValidationError(f"{path}: line {lineno}: expected an object with session_id")
        if "words" in obj:
            rows.append({"session": session_from_dict(obj, lineno), **_key_fields(obj)})
        elif "text" in obj:
            rows.append({"text": str(obj["text"]), **_key_fields(obj)})
        else:
            raise ValidationError(f"{path}: line {lineno}: needs 'words' or 'text'")
    return rows


def _key_fields(obj: dict) -> dict:
    target = obj.get("target_speaker")
    if target is None and isinstance(obj.get("query"), dict):
        target = obj["query"].get("speaker")
    return {"session_id": obj["session_id"], "target": target, "mode": obj.get("mode")}


def _words_in_order(session: SessionAnnotation, speaker=None) -> list[str]:
    ws = sorted(
        (w for w in session.words if speaker is None or w.speaker == speaker),
        key=lambda w: w.onset,
    )
    return normalize([w.word for w in ws])


def _as_words(rec) -> list[str]:
    if "session" in rec:
        return _words_in_order(rec["session"])
    return normalize(rec["text"])


def _as_streams(rec) -> dict:
    if "session" in rec:
        s = rec["session"]
        return {spk: _words_in_order(s, spk) for spk in dict.fromkeys(w.speaker for w in sorted(s.words, key=lambda w: w.onset))}
    tr = parse_serialized(rec["text"], mode=rec.get("mode") if rec.get("mode") != "ts" else None, max_speakers=10)
    if tr.mode == "ts":
        raise ValidationError("cpwer needs speaker-token transcripts, got a target-speaker one")
    return {f"spk{i}": normalize(ws) for i, ws in speaker_streams(tr).items()}


def _as_target(rec, target) -> list[str]:
    if "session" in rec:
        if target is None:
            raise ValidationError(f"{rec['session_id']}: no target speaker for tswer")
        s = rec["session"]
        if rec.get("target") is None and target not in {w.speaker for w in s.words} | set(s.speakers):
            raise ValidationError(f"{rec['session_id']}: target {target!r} not in session")
        return _words_in_order(s, target)
    return normalize(extract_ts(parse_serialized(rec["text"], max_speakers=10)))


def cmd_score(args) -> int:
    refs = _load_records(args.ref)
    hyps = _load_records(args.hyp)
    hyp_by_key = {(h["session_id"], h["target"]): h for h in hyps}
    pairs, ids = [], []

    def key_name(sid, target):
        return sid if target is None else f"{sid}#{target}"

    for ref in refs:
        sid = ref["session_id"]
        if args.metric == "tswer" and ref["target"] is None and "session" in ref:
            units = [h for h in hyps if h["session_id"] == sid and h["target"] is not None]
            if not units:
                pairs.append((None, None))
                ids.append(sid)
                continue
            for h in units:
                pairs.append(((ref, h["target"]), h))
                ids.append(key_name(sid, h["target"]))
            continue
        hyp = hyp_by_key.get((sid, ref["target"])) or hyp_by_key.get((sid, None))
        pairs.append(((ref, ref["target"]), hyp))
        ids.append(key_name(sid, ref["target"]))

    metric_fn = METRICS[args.metric]

    def scorer(ref_pack, hyp):
        if ref_pack is None:
            raise ValidationError("no hypothesis with a target speaker for this session")
        ref, target = ref_pack
        if args.metric == "wer":
            return metric_fn(_as_words(ref), _as_words(hyp))
        if args.metric == "cpwer":
            return metric_fn(_as_streams(ref), _as_streams(hyp))
        target = target or hyp.get("target")
        ref_words = _as_target(ref, target)
        if "session" in hyp:
            return metric_fn(ref_words, _words_in_order(hyp["session"], target))
        return metric_fn(ref_words, hyp["text"])

    report = score_batch(
        [(r, h if r is not None else {}) for r, h in pairs], args.metric, ids, scorer=scorer
    )
    out = {"metric": args.metric, **report.to_dict()}
    if args.metric == "tswer":
        out["definition"] = TSWER_DEFINITION
    out.update({k: v for k, v in _meta(args).items() if k != "command"})
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    for s in report.sessions:
        if s.error:
            _warn(f"{s.session_id}: {s.error}")
    if report.aggregate.reference_words == 0:
        _warn("aggregate rate undefined: no reference words")
    return EXIT_OK


# ---------------------------------------------------------------- mix / synthembed


def cmd_mix(args) -> int:
    if args.pool:
        pool = read_pool(Path(args.pool).read_bytes())
        pool_desc = {"pool": file_digest(args.pool)}
    else:
        pool = synthetic_pool(args.synthetic_pool, 4, derive_seed(args.seed, 2))
        pool_desc = {"pool": f"synthetic:{args.synthetic_pool}"}
    recipe = MixRecipe(args.n, "uniform_over_prefix", args.seed)
    sessions = mix_sessions(pool, recipe, args.count)
    out = Path(args.out_dir)
    manifest = out / "manifest.jsonl"
    atomic_write(manifest, write_manifest(sessions))
    for s in sessions:
        atomic_write(out / "rttm" / f"{s.session_id}.rttm", write_rttm(s.segments))
    atomic_write(out / "all.rttm", "".join(write_rttm(s.segments) for s in sessions))
    _write_sidecar(manifest, _meta(args, delay_law="uniform_over_prefix/v1", sessions=len(sessions), **pool_desc))
    return EXIT_OK


def cmd_synthembed(args) -> int:
    sessions = read_manifest(Path(args.manifest).read_bytes())
    if args.session:
        sessions = [s for s in sessions if s.session_id == args.session]
        if not sessions:
            raise ValidationError(f"session {args.session!r} not in {args.manifest}")
    out = Path(args.out_dir)
    for s in sessions:
        order = ato_order(s.segments, args.max_speakers) if s.segments else None
        A = synth_embeddings(s, args.dim, args.frame_rate, args.seed, order, args.max_speakers)
        if A.shape[1] == 0:
            raise ValidationError(f"{s.session_id}: zero-length session")
        path = out / f"{s.session_id}.emb.mtmt"
        save_tensor(path, A.astype(np.float32))
        _write_sidecar(path, _meta(args, session_id=s.session_id, dims=list(A.shape)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UndefinedRateError as e:
        _warn(str(e))
        return EXIT_OK
    except MtmtError as e:
        print(f"mtmt: error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"mtmt: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
