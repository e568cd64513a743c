"""Command-line front end and scenario orchestration."""
