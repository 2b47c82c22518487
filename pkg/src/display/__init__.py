# Display package for progress tracking and plain-text tables
