# Engine module for the interdependent-security game solver
