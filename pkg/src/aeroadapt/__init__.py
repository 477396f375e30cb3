"""aeroadapt: adaptive multi-pollutant air quality forecasting.

Hourly station records are parsed or synthesized, gaps are filled by chained
linear imputation, and a from-scratch BiLSTM network with attention predicts
pollutant concentrations and pollution levels 4 to 24 hours ahead, with a
weekly retraining loop for streamed data.
"""

__version__ = "0.1.0"
