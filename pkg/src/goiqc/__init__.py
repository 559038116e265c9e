"""Compile linear quantum lambda-terms to circuits through token machines."""
