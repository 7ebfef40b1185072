"""Full-duplex massive MIMO self-interference cancellation simulator."""
