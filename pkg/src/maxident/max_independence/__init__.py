# Max Independence Package
