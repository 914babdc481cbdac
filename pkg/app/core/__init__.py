# Core Package - protocol logic
