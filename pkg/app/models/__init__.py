# Models Module: spaces, moments, LMI models and reports
