# FLAT Harness - Main Application Package
