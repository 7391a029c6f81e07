"""mapcsim utils"""
