# Маркер пакета backend
