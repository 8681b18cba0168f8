"""
orbitcert modules
Lie algebra structure, Cartan compatibility, SPD geometry and orbit descent.
"""
