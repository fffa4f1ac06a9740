"""
multmixed 服务包
"""
