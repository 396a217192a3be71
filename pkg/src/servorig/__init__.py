"""Servo destructive-test rig simulator and repeated-measures ANOVA engine."""

__version__ = "0.1.0"
