'''Concerns loaded at start up (see init.load_modules).'''
