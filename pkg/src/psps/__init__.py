"""Planning toolkit for public safety power shutoffs.

Builds day-ahead unit-commitment plus line de-energization MILPs under
wildfire ignition risk budgets, stress-tests committed plans against Monte
Carlo real-time outages, and quantifies the value of stochastic modeling and
of the wildfire risk metric choice.
"""

__version__ = "0.1.0"
