# Max Model Package
