"""HTTP service wrapping the experiment handlers; the CLI shares the handlers."""
