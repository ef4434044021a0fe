# WordProb - App Package
# Version: 1.0.0
