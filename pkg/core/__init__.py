"""
Range-bound tunneling toolkit core package containing the tunnel engine.
"""
