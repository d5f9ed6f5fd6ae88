from hypothesis import settings

# the whole suite is meant to be deterministic run-to-run; derandomize the
# property tests so CI failures are reproducible
settings.register_profile("deterministic", derandomize=True, deadline=None)
settings.load_profile("deterministic")
