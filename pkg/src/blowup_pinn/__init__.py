"""PINNs for inviscid Burgers' PDE near finite-time blow-up.

Library layout:

* ``network``   - tanh MLPs with exact input-jets and parameter gradients
* ``optimizer`` - full-batch Adam with best-iterate checkpointing
* ``problems``  - the 1D and 2D blow-up instances, residuals, PINN losses
* ``sampling``  - collocation sets and Gauss-Legendre quadrature
* ``bounds``    - numerical evaluation of the generalization bounds
* ``harness``   - sweep campaigns and CSV persistence
* ``cli``       - the ``blowup-pinn`` command
"""

__version__ = "0.1.0"
