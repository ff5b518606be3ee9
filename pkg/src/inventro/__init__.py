"""Upper bounds on invariance entropy from symbolic invariant controllers."""
