from .ctmc import CtmcModel, Transition, build, residual, stationary
from .signals import (QrReport, SignalQueueSpec, build_signal_queue, check_qr, departure_rates,
                      qr_report)
from .tandem import (TandemModel, TandemTraffic, UnstableTandem, independent_pair, marginals,
                     tandem_fig1, tandem_traffic, verify_product_form)
