"""Exact branch-and-cut solver for pickup and delivery with a crossdock and perishable goods."""
