"""Write the offline replay corpus used by the README walkthrough.

Usage: python3 scripts/make_demo_corpus.py [target-dir]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from tests.conftest import REQUIREMENT_TEXT, build_researcher_corpus  # noqa: E402


def main() -> None:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-fixtures")
    build_researcher_corpus(target)
    (target / "requirement.txt").write_text(REQUIREMENT_TEXT + "\n", encoding="utf-8")
    print(f"wrote replay fixtures and requirement.txt to {target}/")


if __name__ == "__main__":
    main()
