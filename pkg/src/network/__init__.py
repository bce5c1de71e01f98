"""Boolean network model: topology, parameters and dynamics"""
