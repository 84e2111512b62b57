#!/usr/bin/env python3
"""
Blindspot Cartographer
Launcher for running from a source checkout
"""

from blindspot_cartographer.main import main

if __name__ == "__main__":
    main()
