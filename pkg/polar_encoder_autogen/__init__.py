from polar_encoder_autogen import config  # noqa: F401
