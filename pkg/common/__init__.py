# Common utilities for the injectivity checker
