from dualssc.cli import entrypoint

entrypoint()
