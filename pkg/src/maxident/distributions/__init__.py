# Distributions Package
