"""mapcsim simulates overlapping co-channel Wi-Fi BSSs, where one pair of APs
shares TXOPs by coordinated TDMA, and compares its latency with an
uncoordinated system."""


__version__ = '0.1.0'
