import java.security.MessageDigest;

public class HashToken {
    public static void main(String[] args) {
        String algorithm = args[0];
        try {
            MessageDigest digest = MessageDigest.getInstance(algorithm);
        } catch (NoSuchAlgorithmException ex) {
            System.err.println("Unknown algorithm: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("digest ready: " + digest.getAlgorithm());
    }
}
