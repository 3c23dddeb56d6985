# Identification Package
