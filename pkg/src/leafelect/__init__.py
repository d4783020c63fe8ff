"""Leaf-elimination leader election on trees."""
