"""E-FASP: sequence programs, their evaluator and the PRAM bridge."""
