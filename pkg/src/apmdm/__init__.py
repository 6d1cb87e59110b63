"""Any-process masked diffusion: generation core, PRAM reference, E-FASP, tasks, model."""

__version__ = "0.1.0"
