"""Run the demo scenarios and print their summaries; outputs land in demos/out/."""
from pathlib import Path

from defeature.cli import RunOptions, run_scenario
from defeature.scenario import load_scenario

HERE = Path(__file__).parent


def main():
    for path in sorted(HERE.glob("*.scn")):
        scenario = load_scenario(path)
        report = run_scenario(scenario, RunOptions(out=HERE / "out" / scenario.name, vtk=True))
        print(report.summary())


if __name__ == "__main__":
    main()
