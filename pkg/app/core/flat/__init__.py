# FLAT Package - Client, SP and IdP state machines
