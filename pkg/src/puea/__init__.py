"""Primary-user emulation attack detection with one-class classifiers.

``scenario`` simulates fusion-centre energy reports, ``features`` turns each
slot into a five-number summary, ``oneclass`` holds the four detectors and
``evaluation`` scores them; ``cli`` wires it all to the ``puea`` command.
"""
__version__ = "0.1.0"
