"""Runs the CLI on the fixture data and validates every document it writes."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def main() -> int:
    cli, data, schemas = sys.argv[1], Path(sys.argv[2]), Path(sys.argv[3])
    validators = {}
    for path in schemas.glob("*.schema.json"):
        schema = json.loads(path.read_text())
        jsonschema.Draft202012Validator.check_schema(schema)
        validators[path.name.removesuffix(".schema.json")] = jsonschema.Draft202012Validator(schema)

    failures = 0

    def check(kind, doc, where):
        nonlocal failures
        errors = sorted(validators[kind].iter_errors(doc), key=str)
        for e in errors[:3]:
            print(f"{where}: {e.message} at {list(e.absolute_path)}")
        failures += bool(errors)

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)

        def run(*args, ok=(0, 1)):
            r = subprocess.run([cli, *map(str, args)], capture_output=True, text=True)
            if r.returncode not in ok:
                raise SystemExit(f"{args[0]} exited {r.returncode}: {r.stderr}")
            return r

        run("baseline", "--input", data / "baseline.jsonl", "--out", out / "baseline.json")
        run("calibrate", "--kind", "cvm", "--alpha", "0.01", "--t-max", "40", "--replications", "1000",
            "--out", out / "thresholds.json", "--validate-streams", "200", "--validate-out", out / "rates.json")
        run("audit", "--baseline", out / "baseline.json", "--production", data / "production_drift.jsonl",
            "--out", out / "audit.json")
        run("outliers", "--counts", data / "label_counts.csv", "--out", out / "outliers.json")
        run("simulate", "--grid-max", "0.05", "--grid-step", "0.02", "--out", out / "simulation.json")
        run("cpm-experiment", "--replications", "3", "--cpm-alpha", "0.01", "--cpm-replications", "1000",
            "--cpm-t-max", "130", "--out", out / "cpm.json")

        for kind, name in [("baseline", "baseline.json"), ("thresholds", "thresholds.json"),
                           ("null-rates", "rates.json"), ("audit", "audit.json"), ("outliers", "outliers.json"),
                           ("simulation", "simulation.json"), ("cpm-experiment", "cpm.json")]:
            check(kind, json.loads((out / name).read_text()), name)

        stream = (data / "stream.jsonl").read_text().splitlines()
        stream.insert(5, '{"label": "cat", "confidence": 7}')
        r = subprocess.run([cli, "monitor", "--baseline", out / "baseline.json", "--thresholds",
                            out / "thresholds.json"], input="\n".join(stream) + "\n", capture_output=True, text=True)
        events = [json.loads(line) for line in r.stdout.splitlines() if line]
        if not any(e["status"] == "warning" for e in events):
            print("monitor: no warning event for the invalid record")
            failures += 1
        for i, event in enumerate(events):
            check("monitor-event", event, f"monitor line {i + 1}")

    for name in ["baseline.jsonl", "production_clean.jsonl", "production_drift.jsonl", "stream.jsonl"]:
        lines = (data / name).read_text().splitlines()
        bad = 0
        for i, line in enumerate(lines):
            try:
                doc = json.loads(line)
            except json.JSONDecodeError:
                bad += 1
                continue
            if not validators["record"].is_valid(doc):
                bad += 1
        if bad > 1:
            print(f"{name}: {bad} records fail the record schema")
            failures += 1

    print("schema validation:", "ok" if failures == 0 else f"{failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
