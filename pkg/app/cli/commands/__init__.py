# CLI Commands Package
