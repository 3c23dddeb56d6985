# Maxima Identifiability Toolkit - Source Package
