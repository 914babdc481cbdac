# Models Package - pydantic schemas
