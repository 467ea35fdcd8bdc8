"""
replaygauge command-line entry point

    python main.py generate --out data/synth
    python main.py stats data/synth/events.csv --ratings f1,f2,f3
    python main.py pipeline --input data/synth/events.csv --work work --truth data/synth
"""
import sys

from replaygauge.cli import main

if __name__ == "__main__":
    sys.exit(main())
