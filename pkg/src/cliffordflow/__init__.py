"""Projective geometric algebra, Clifford frame attention and SE(3) flow matching."""
