# Testing Package
