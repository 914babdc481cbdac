# Repositories Package - in-memory IdP state
