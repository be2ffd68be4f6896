"""A complete scripted evaluation in a scratch directory.

Generates test sets from the fixtures, writes oracle scripts, runs four
systems over both domains and prints the leaderboard and the response-type
mix per system. Nothing touches the network.

    python3 demos/leaderboard.py
"""

import json
import tempfile
from pathlib import Path

from ragharness.analysis import fmt_percent
from ragharness.runner import RunConfig, cmd_analyze, cmd_gen, cmd_run, make_synthetic_scripts

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    cfg = RunConfig.from_mapping(
        {
            "domains": ["aminer", "wiki"],
            "tasks": ["1-3", "3-5", "1-1", "3-4"],
            "systems": ["ReAct+gpt-4-1106", "PAL+gpt-4-1106", "DFSDT+gpt-4-1106", "FC+gpt-4-1106"],
            "models": {"gpt-4-1106": {"kind": "scripted", "location": "scripts/{workflow}.json"}},
            "cases_per_task": 50,
            "fault_plan": "synthetic",
        },
        base_dir=root,
    )
    manifest = cmd_gen(cfg)
    for tid, info in manifest["tasks"].items():
        print(f"task {tid}: pool {info['pool']}, test set {info['test_set']}")
    make_synthetic_scripts(cfg, "scripts")
    record = cmd_run(cfg)
    print(f"\n{record.completed} pairs, {record.network_calls} network calls")

    cmd_analyze([root / "run"], root / "report")
    report = json.loads((root / "report" / "report.json").read_text())
    print("\nrank  system              aminer   wiki    all")
    for entry in report["leaderboards"]["all"]:
        row = report["matrix"][entry["system"]]
        print(f"{entry['rank']:>4}  {entry['system']:<18} {fmt_percent(row['aminer'] / 100):>6} {fmt_percent(row['wiki'] / 100):>6} {fmt_percent(row['all'] / 100):>6}")
    print("\nresponse types (% of cases)")
    for system, dist in report["error_distributions"].items():
        mix = "  ".join(f"{k} {v * 100:.1f}" for k, v in dist.items())
        print(f"  {system:<18} {mix}")
