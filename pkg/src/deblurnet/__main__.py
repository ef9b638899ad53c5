from deblurnet.cli import entry

entry()
