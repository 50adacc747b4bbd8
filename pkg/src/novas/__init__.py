"""NoVaS volatility forecasting: transforms, predictors, a GARCH benchmark and a rolling evaluation harness."""
