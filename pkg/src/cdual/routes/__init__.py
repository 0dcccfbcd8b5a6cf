"""HTTP routes; `cdual.main_fastapi` includes each module's `router`."""
