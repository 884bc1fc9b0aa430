import numpy as np, sys
rng=np.random.default_rng(12345)
T=800; R=8000
def trace_stat(X, det):
    # X: T x m random walk; p=1, so Z2 empty (or const for trend case)
    dX=np.diff(X,axis=0); Xl=X[:-1]; n=dX.shape[0]
    if det=='const': Z1=np.hstack([Xl,np.ones((n,1))]); Z2=None
    elif det=='none': Z1=Xl; Z2=np.ones((n,1))
    else: Z1=np.hstack([Xl,np.arange(1,n+1)[:,None]]); Z2=np.ones((n,1))
    R0,R1=dX,Z1
    if Z2 is not None:
        R0=dX-Z2@np.linalg.lstsq(Z2,dX,rcond=None)[0]; R1=Z1-Z2@np.linalg.lstsq(Z2,Z1,rcond=None)[0]
    S00=R0.T@R0/n; S11=R1.T@R1/n; S01=R0.T@R1/n
    M=np.linalg.solve(S11,S01.T@np.linalg.solve(S00,S01))
    lam=np.sort(np.real(np.linalg.eigvals(M)))[::-1][:X.shape[1]]
    return -n*np.sum(np.log(1-lam))
for det in ['none','const','trend']:
  for m in range(1,6):
    s=np.array([trace_stat(np.cumsum(rng.standard_normal((T,m)),axis=0),det) for _ in range(R)])
    print(det,m,np.round(np.quantile(s,[0.9,0.95,0.99]),2)); sys.stdout.flush()
