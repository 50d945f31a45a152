"""Command-line client for the lab service.

Subcommands marshal flags into the service request models and render the
responses. Without --url the handlers run in-process; with --url the same
requests go over HTTP to a server started by `bracketlab serve` (file outputs
are then written server-side).

Exit codes: 0 success, 1 runtime failure, 2 verification inconsistency.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from . import service
from .brackets import enumerate_all, label_binary, label_ternary, stats

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INCONSISTENT = 2


def _remote(url: str, path: str, request) -> dict:
    with httpx.Client(base_url=url, timeout=None) as client:
        if request is None:
            resp = client.get(path)
        else:
            resp = client.post(path, json=request.model_dump(mode="json"))
        resp.raise_for_status()
        return resp.json()


def _dispatch(args, path: str, request, handler, response_model):
    if args.url:
        return response_model.model_validate(_remote(args.url, path, request))
    return handler(request)


def _parse_lengths(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _parse_params(text: str) -> list[float]:
    # tolerate unicode minus from copy-pasted tables
    values = [float(x.replace("−", "-")) for x in text.split(",")]
    if len(values) != 4:
        raise argparse.ArgumentTypeError("expected four numbers: w_open,w_close,u,w_b")
    return values


def cmd_verify(args) -> int:
    req = service.VerifyRequest(
        params=args.params,
        max_len=args.max_len,
        epsilon=args.epsilon,
        tol=args.tol,
        deviation_floor=args.deviation_floor,
        samples=args.samples,
        seed=args.seed,
        out=args.out,
    )
    resp = _dispatch(args, "/verify", req, service.handle_verify, service.VerifyResponse)
    c = resp.canonical
    print(
        f"canonical agreement: {c.sequences_checked} sequences up to length {c.max_len}, "
        f"{c.mismatches} mismatches, closed form exact: {c.closed_form_exact}"
    )
    s = resp.sweep
    print(
        f"falsification sweep: {s.n_samples} sampled params "
        f"(deviation floor {s.deviation_floor}), verdicts {s.verdicts}, "
        f"longest counterexample {s.max_counterexample_len}"
    )
    for cf in resp.closed_form:
        print(f"closed form (increment {cf.increment}, up to length {cf.max_len}): {'ok' if cf.ok else 'FAILED'}")
    if resp.params_report is not None:
        pr = resp.params_report
        ind = pr.indicators
        ab = "undefined" if ind.ab_ratio is None else f"{ind.ab_ratio:.6g}"
        print(f"params {pr.params}: a/b = {ab}, u = {ind.u_value:.6g}, holds = {ind.holds}")
        for case in pr.cases:
            mark = "ok" if case.satisfied else "VIOLATED"
            print(
                f"  case {case.case_id} {case.sequence!r}: h = {case.observed_h:.6g} "
                f"(required {case.required}) {mark}"
            )
        cex = pr.counterexample if pr.counterexample is not None else "none"
        print(f"  verdict: {pr.verdict} (counterexample: {cex})")
    if resp.report_path:
        print(f"report written to {resp.report_path}")
    print(f"inconsistencies: {resp.inconsistencies}")
    return EXIT_OK if resp.ok else EXIT_INCONSISTENT


def _train_request(args) -> service.TrainRequest:
    base = {}
    if args.config:
        with open(args.config, "r", encoding="ascii") as fh:
            base = json.load(fh)
    flags = {
        "task": args.task,
        "bias": args.bias,
        "train_length": args.train_length,
        "epochs": args.epochs,
        "runs": args.runs,
        "seed": args.seed,
        "lr": args.lr,
        "batch_size": args.batch_size,
        "eval_lengths": _parse_lengths(args.eval_lengths) if args.eval_lengths else None,
        "eval_samples": args.eval_samples,
        "out": args.out,
        "log_name": args.log_name,
    }
    merged = dict(base)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return service.TrainRequest(**merged)


def cmd_train(args) -> int:
    if args.suite:
        fields = {
            "seed": args.seed,
            "train_lengths": _parse_lengths(args.train_lengths) if args.train_lengths else None,
            "epochs": args.epochs,
            "runs": args.runs,
            "lr": args.lr,
            "batch_size": args.batch_size,
            "eval_lengths": _parse_lengths(args.eval_lengths) if args.eval_lengths else None,
            "eval_samples": args.eval_samples,
            "out": args.out,
        }
        req = service.SuiteRequest(**{k: v for k, v in fields.items() if v is not None})
        resp = _dispatch(args, "/suite", req, service.handle_suite, service.SuiteResponse)
        print(f"manifest: {resp.manifest_path}")
        for line in resp.summaries:
            print(line)
        return EXIT_OK if resp.diverged == 0 else EXIT_FAILURE
    req = _train_request(args)
    resp = _dispatch(args, "/train", req, service.handle_train, service.TrainResponse)
    print(f"log: {resp.log_path}")
    print(resp.summary)
    return EXIT_OK if resp.diverged == 0 else EXIT_FAILURE


def cmd_eval(args) -> int:
    req = service.EvalRequest(
        log=args.log,
        run_index=args.run_index,
        lengths=_parse_lengths(args.eval_lengths) if args.eval_lengths else [20, 50],
        samples=args.samples,
        seed=args.seed if args.seed is not None else 0,
    )
    resp = _dispatch(args, "/eval", req, service.handle_eval, service.EvalResponse)
    print(f"{resp.task} (bias {resp.bias}), trained at length {resp.train_length}, run {resp.run_index}")
    for length in sorted(resp.accuracies, key=int):
        print(f"  {length} tokens: {resp.accuracies[length]:.1f}%")
    return EXIT_OK


def cmd_report(args) -> int:
    req = service.ReportRequest(logs=args.logs, out=args.out)
    resp = _dispatch(args, "/report", req, service.handle_report, service.ReportResponse)
    print(resp.table, end="")
    if resp.paths:
        for name, path in sorted(resp.paths.items()):
            print(f"{name}: {path}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    # streams locally instead of round-tripping a potentially huge response
    if args.url:
        resp = service.EnumerateResponse.model_validate(
            _remote(args.url, f"/enumerate?length={args.length}", None)
        )
        rows = ((r.text, r.diff, r.binary, r.ternary) for r in resp.rows)
    else:
        rows = (
            (seq.text, stats(seq).diff, label_binary(seq), label_ternary(seq))
            for seq in enumerate_all(args.length)
        )
    out = open(args.out, "w", encoding="ascii") if args.out else sys.stdout
    try:
        for text, diff, binary, ternary in rows:
            if args.labels == "none":
                out.write(f"{text}\n")
            elif args.labels == "binary":
                out.write(f"{text}\t{binary}\n")
            elif args.labels == "ternary":
                out.write(f"{text}\t{ternary}\n")
            else:
                out.write(f"{text}\t{diff}\t{binary}\t{ternary}\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service.app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bracketlab")
    parser.add_argument("--url", default=None, help="remote service URL (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check the counting conditions in both directions")
    p.add_argument("--params", type=_parse_params, default=None, metavar="W_OPEN,W_CLOSE,U,W_B")
    p.add_argument("--max-len", type=int, default=12, dest="max_len")
    p.add_argument("--epsilon", type=float, default=1e-9)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--deviation-floor", type=float, default=0.01, dest="deviation_floor")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train", help="train one config (or the full suite) and log the runs")
    p.add_argument("--config", default=None, help="JSON file mirroring the flags")
    p.add_argument("--suite", action="store_true", help="run the bias x task x length grid")
    p.add_argument("--task", choices=["binary", "ternary"], default=None)
    p.add_argument("--bias", choices=["on", "off"], default=None)
    p.add_argument("--train-length", type=int, default=None, dest="train_length")
    p.add_argument("--train-lengths", default=None, dest="train_lengths", help="suite mode: comma-separated")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--eval-lengths", default=None, dest="eval_lengths", help="comma-separated")
    p.add_argument("--eval-samples", type=int, default=None, dest="eval_samples")
    p.add_argument("--out", default=None)
    p.add_argument("--log-name", default=None, dest="log_name")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="re-evaluate a logged run at chosen lengths")
    p.add_argument("--log", required=True)
    p.add_argument("--run-index", type=int, default=0, dest="run_index")
    p.add_argument("--eval-lengths", default=None, dest="eval_lengths")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="accuracy table and indicator histograms from run logs")
    p.add_argument("logs", nargs="+")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("enumerate", help="list every sequence of a length, with labels")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--labels", choices=["none", "binary", "ternary", "all"], default="none")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, httpx.HTTPError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
