"""Uniqueness / reliability statistics and curve fitting"""
