"""Full-duplex underwater acoustic link simulator.

Subpackages follow the processing chain: :mod:`fduwa.dsp` (pulse shaping and
frequency conversion), :mod:`fduwa.coding` (convolutional codes and frames),
:mod:`fduwa.channel` (time-varying multipath and noise mixing),
:mod:`fduwa.adaptive` (sliding-window / basis-expansion / sparse-DCD channel
estimators), :mod:`fduwa.receiver` (self-interference cancellation, Rake
combiners, turbo iterations) and :mod:`fduwa.harness` (experiment runner and
file outputs).
"""

__version__ = "0.1.0"
