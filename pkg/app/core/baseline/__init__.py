# Baseline Package - traditional FIdM comparison protocol
