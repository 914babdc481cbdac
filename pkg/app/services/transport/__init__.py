# Transport Package
