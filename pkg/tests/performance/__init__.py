# Performance tests package