"""Loschmidt-echo decoherence of a qubit coupled to Ising/XY/XXZ spin-chain baths.

Three engines compute the same echo L(t) at different scales:

* ``oracle``      -- brute-force full-Hilbert-space ground truth (N <~ 20)
* ``freefermion`` -- exact determinant formula for XY-class open chains (N ~ 10^3)
* ``tebd``        -- matrix-product-state evolution for the XXZ chain (N ~ 10^2)

``analysis`` extracts decay rates, plateaus and critical fits from echo series;
``gates`` compiles Trotter steps of the full system+bath Hamiltonian into
optical-lattice primitives; ``cli`` drives runs, sweeps and reports.
"""

__version__ = "0.1.0"
