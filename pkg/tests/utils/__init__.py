# Test utilities and helpers