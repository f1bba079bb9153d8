"""Generate the seed-42 corpus, verify it in parallel, and summarize."""
import collections
import sys
import tempfile
from pathlib import Path

from ncretract.cli import main

with tempfile.TemporaryDirectory() as tmp:
    corpus, report = Path(tmp) / "corpus", Path(tmp) / "report.json"
    main(["generate", "corpus", "--seed", "42", "--out", str(corpus)])
    code = main(["verify", str(corpus), "--jordan", "--triple", "--jobs", "4", "--no-timing",
                 "--report", str(report)])
    import json

    entries = json.loads(report.read_text())["instances"]
    print(f"instances: {len(entries)}  exit code: {code}")
    print(dict(collections.Counter(e["status"] for e in entries)))
    sys.exit(code)
