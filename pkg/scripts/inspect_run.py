#!/usr/bin/env python3
"""
Check a run directory: recompute the config hash and make sure every
artifact carries it.

Usage: python scripts/inspect_run.py runs/<experiment>-<hash>
"""

import os
import sys
import json

import pandas as pd

# project root on the path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from peierls_lab.cli.config import ExperimentConfig


class RunInspector:
    def __init__(self, run_dir):
        self.run_dir = run_dir
        self.manifest = {}
        self.report = {}
        self.problems = []

    def load_json_file(self, name):
        path = os.path.join(self.run_dir, name)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return json.load(f)
        except Exception as e:
            self.problems.append(f"{name}: cannot read ({e})")
            print(f"❌ Cannot read {name}: {e}")
        return {}

    def rehash(self):
        """Hash of the config stored in report.json, recomputed from scratch."""
        data = dict(self.report.get('config', {}))
        data['experiment'] = self.report.get('experiment')
        return ExperimentConfig.from_dict(data).hash

    def check_artifact(self, name, config_hash):
        path = os.path.join(self.run_dir, name)
        if not os.path.exists(path):
            return f"{name}: listed in the manifest but missing"
        if name.endswith('.csv'):
            frame = pd.read_csv(path)
            if 'config_hash' not in frame.columns:
                return f"{name}: no config_hash column"
            if len(frame) and not (frame['config_hash'] == config_hash).all():
                return f"{name}: config_hash column disagrees"
        elif name.endswith('.jsonl'):
            with open(path, 'r', encoding='utf-8') as f:
                for n, line in enumerate(f, start=1):
                    if json.loads(line).get('config_hash') != config_hash:
                        return f"{name}: line {n} carries another hash"
        elif name.endswith('.json'):
            with open(path, 'r', encoding='utf-8') as f:
                if json.load(f).get('config_hash') != config_hash:
                    return f"{name}: config_hash key disagrees"
        elif config_hash[:12] not in name:
            return f"{name}: binary artifact without the hash in its name"
        return None

    def run(self):
        print(f"🔍 Inspecting {self.run_dir}")
        self.manifest = self.load_json_file('manifest.json')
        self.report = self.load_json_file('report.json')
        if self.problems:
            return False

        config_hash = self.manifest.get('config_hash', '')
        recomputed = self.rehash()
        if recomputed == config_hash:
            print(f"✅ Config hash {config_hash[:12]} reproduces")
        else:
            self.problems.append(f"config hash {config_hash[:12]} != recomputed {recomputed[:12]}")
            print(f"❌ Config hash mismatch: manifest {config_hash[:12]}, recomputed {recomputed[:12]}")

        for name in self.manifest.get('artifacts', []) + ['manifest.json']:
            problem = self.check_artifact(name, config_hash)
            if problem:
                self.problems.append(problem)
                print(f"❌ {problem}")
            else:
                print(f"✅ {name}")

        print(f"\n📊 Experiment: {self.manifest.get('experiment')}")
        print(f"📊 Tool version: {self.manifest.get('tool_version')}")
        print(f"📊 Started: {self.manifest.get('started_at')}, finished: {self.manifest.get('finished_at')}")
        for stage, seconds in self.manifest.get('stages', {}).items():
            print(f"  ⏱️  {stage}: {seconds:.3f}s")
        passed = self.report.get('passed')
        print(f"{'✅' if passed else '⚠️ '} Checks passed: {passed}")
        if self.problems:
            print(f"\n❌ {len(self.problems)} problem(s) found")
            return False
        print("\n✅ Run directory is consistent")
        return True


def main():
    if len(sys.argv) != 2:
        print(__doc__)
        return 1
    return 0 if RunInspector(sys.argv[1]).run() else 1


if __name__ == "__main__":
    sys.exit(main())
