# Nonuniqueness Package
