# Utility helpers for SDP Code Bounds
