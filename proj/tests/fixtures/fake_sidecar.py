"""Scriptable stand-in for the evaluator sidecar (line-delimited JSON on stdio)."""
import argparse
import json
import os
import sys
import time

ap = argparse.ArgumentParser()
ap.add_argument("--protocol", type=int, default=1)
ap.add_argument("--evaluator-id", default="fake-sidecar/1")
ap.add_argument("--responses", help="recorded replies keyed by op then candidate id")
ap.add_argument("--log", help="append every raw request line here")
ap.add_argument("--mode", default="ok",
                choices=["ok", "bad-id", "inconsistent", "raise", "garbage", "dead"])
ap.add_argument("--crash-after", type=int, default=-1,
                help="exit after this many requests, once per --state file")
ap.add_argument("--hang-on", default="", help="op to stall on, once per --state file")
ap.add_argument("--state", help="marker file making crash/hang happen only once")
args = ap.parse_args()

if args.mode == "dead":
    sys.exit(3)

recorded = {}
if args.responses:
    with open(args.responses) as f:
        recorded = json.load(f)

once = True
if args.state:
    once = not os.path.exists(args.state)
    if once and (args.crash_after >= 0 or args.hang_on):
        open(args.state, "w").close()


def reply(obj):
    try:
        sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")
        sys.stdout.flush()
    except BrokenPipeError:
        os._exit(0)


served = 0
for line in sys.stdin:
    if args.log:
        with open(args.log, "a") as f:
            f.write(line)
    req = json.loads(line)
    op = req.get("op")
    if once and 0 <= args.crash_after <= served:
        sys.exit(1)
    served += 1
    if once and op == args.hang_on:
        time.sleep(60)
    if op == "hello":
        reply({"protocol": args.protocol, "evaluator_id": args.evaluator_id})
        continue
    cid = req["id"] if args.mode != "bad-id" else "someone-else"
    if args.mode == "garbage":
        sys.stdout.write("this is not json\n")
        sys.stdout.flush()
        continue
    if op == "validate":
        if cid in recorded.get("validate", {}):
            out = dict(recorded["validate"][cid])
        elif args.mode == "inconsistent":
            out = {"parse_ok": False, "instantiate_ok": True, "forward_ok": False,
                   "contract_ok": False, "error": "odd"}
        else:
            ok = "class Net" in req["source"]
            out = {"parse_ok": True, "instantiate_ok": ok, "forward_ok": ok, "contract_ok": ok,
                   "param_count": 1234, "error": None if ok else "no Net"}
        out["id"] = cid
        reply(out)
    elif op == "train_epoch":
        if args.mode == "raise":
            reply({"id": cid, "accuracy": None, "wall_time_s": 0.1,
                   "error": "RuntimeError: mat1 and mat2 shapes cannot be multiplied"})
        elif cid in recorded.get("train", {}):
            out = dict(recorded["train"][cid])
            out["id"] = cid
            reply(out)
        else:
            reply({"id": cid, "accuracy": 0.5 if req["lr"] > 0 else 0.1,
                   "wall_time_s": 1.5, "error": None})
    else:
        reply({"id": req.get("id"), "error": "unknown op"})
