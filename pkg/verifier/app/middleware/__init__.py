# Middleware package

